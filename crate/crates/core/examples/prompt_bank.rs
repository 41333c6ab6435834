//! Parsing a synonym file and batching its synonyms.

use segfuse::prompts::{chunk_synonyms, PromptBank};

const TEXT: &str = "\
# class per line, canonical name first
Road, street , roadway, road
sky
Building, house, tower
";

fn main() -> segfuse::Result<()> {
    let bank = PromptBank::parse(TEXT)?;
    for class in bank.classes() {
        println!("{} -> {:?}", class.canonical(), class.synonyms());
    }
    println!("{} classes, {} synonyms", bank.num_classes(), bank.total_synonyms());

    for (i, batch) in chunk_synonyms(&bank, 3).iter().enumerate() {
        println!("batch {i}: {batch:?}");
    }

    print!("normalized file:\n{}", bank.to_text());

    let too_many = (0..11).map(|i| format!("w{i}")).collect::<Vec<_>>().join(",");
    if let Err(e) = PromptBank::parse(&too_many) {
        println!("error[{}]: {e}", e.code());
    }
    Ok(())
}
