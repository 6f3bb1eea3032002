//! Fixtures shared by the kernel benchmarks.

use lhscad::imgcore::GrayImage;
use lhscad::phantom::{generate_phantom, plan_corpus, Difficulty};

/// First view of a one-case easy phantom corpus, `width x height` pixels.
pub fn phantom_image(width: usize, height: usize, seed: u64) -> GrayImage {
    let plan = plan_corpus(1, 0, Difficulty::Easy, seed, width, height);
    generate_phantom(&plan.views[0].spec).expect("phantom spec is valid").image
}
