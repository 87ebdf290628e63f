//! Cubes, label maps, normalization, splits, patches and synthetic scenes.

mod cube;
mod norm;
mod patch;
mod split;
mod synth;

pub use cube::{decode_cube, encode_cube, load_cube, load_labels, save_cube, save_labels, HsiCube, LabelMap};
pub use norm::mmnorm;
pub use patch::{extract_patch, extract_patch_into, rotate180, Patch};
pub use split::{stratified_split, Split, SplitAssignment, SplitFractions};
pub use synth::{class_spectrum, synth_scene, SynthConfig};
