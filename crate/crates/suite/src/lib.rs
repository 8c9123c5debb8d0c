//! Holds the `acceptance` test target, which runs the end-to-end
//! experiments and checks their results. It is kept in its own package so
//! that it runs after the library and command-line tests.
