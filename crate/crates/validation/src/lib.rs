//! Holds the `acceptance` test target, which reruns the simulation study and
//! prints one PASS/FAIL line per criterion. Run it with
//! `cargo test -p phdsel-validation --test acceptance`.
