//! Book chapters compiled as doctests, one module per chapter so a failure
//! names its chapter.

macro_rules! chapter {
    ($name:ident, $file:literal) => {
        #[doc = include_str!(concat!("../../../book/src/", $file))]
        pub mod $name {}
    };
}

chapter!(introduction, "introduction.md");
chapter!(cohorts, "cohorts.md");
chapter!(progress, "progress.md");
chapter!(bands, "bands.md");
chapter!(gaps, "gaps.md");
chapter!(shrinkage, "shrinkage.md");
chapter!(synthetic, "synthetic.md");
chapter!(cli, "cli.md");
