//! Dense grids, label maps, the CFT1 file format and bilinear resampling.

mod grid;
mod io;
mod resize;

pub use grid::{DenseGrid, LabelMap};
pub use io::{
    decode_grid, decode_labels, encode_grid, encode_labels, load_grid, load_grid_with,
    load_labels, save_grid, save_labels, write_pgm, LoadOptions, DTYPE_F32, DTYPE_U32, MAGIC,
};
pub use resize::bilinear_resize;
