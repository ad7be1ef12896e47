//! Acceptance checks for `resolute`; the content lives in `tests/`.
