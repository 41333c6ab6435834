//! The command-line flow, driven in-process: gen, prior, fuse, eval.

use segfuse::cli::{self, scene_files};

fn segfuse(args: &[&str]) -> String {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("segfuse").chain(args.iter().copied()), &mut out, &mut err);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    String::from_utf8(out).unwrap()
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let dir = tmp.path();
    let at = |name: &str| dir.join(name).to_string_lossy().into_owned();

    segfuse(&["gen", "--seed", "1", "--feature-stride", "2", "--out-dir", &at("")]);
    segfuse(&[
        "--threads", "2", "prior",
        "--features", &at(scene_files::FEATURES),
        "--embeddings", &at(scene_files::EMBEDDINGS),
        "--prompts", &at(scene_files::PROMPTS),
        "--height", "32", "--width", "32",
        "--out", &at("prior.cft"),
    ]);
    segfuse(&[
        "fuse",
        "--evidence", &at(scene_files::EVIDENCE),
        "--presence", &at(scene_files::PRESENCE),
        "--prior", &at("prior.cft"),
        "--out", &at("labels.cft"),
        "--pgm", &at("labels.pgm"),
    ]);
    print!(
        "{}",
        segfuse(&["eval", "--gt", &at(scene_files::GT), "--pred", &at("labels.cft"), "--classes", "4"])
    );
}
