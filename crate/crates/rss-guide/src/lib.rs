//! Guide doc-test shim; chapters are added as the book is written.
