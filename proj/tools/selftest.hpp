#pragma once

namespace occkit::tools {

/// Runs the built-in oracle suite (traversal marching, metric counting,
/// gradient finite differences, dilation scan) and prints one line per
/// check. Returns 0 when everything agrees.
int run_selftest();

}  // namespace occkit::tools
