//! The guide in `book/` compiled as documentation, so that every Rust
//! snippet in it runs under `cargo test`.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(scenes, "scenes.md");
chapter!(sensing, "sensing.md");
chapter!(registration, "registration.md");
chapter!(scoring, "scoring.md");
chapter!(planning, "planning.md");
chapter!(sequence_model, "sequence-model.md");
chapter!(motion, "motion.md");
chapter!(episodes, "episodes.md");
chapter!(cli, "cli.md");
