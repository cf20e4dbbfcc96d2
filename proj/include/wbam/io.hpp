#pragma once

// Fixed float formatting and file emission for run artifacts.

#include <string>

namespace wbam {

/// Significant digits used for every emitted float: 17 unless the
/// WBAM_PRECISION environment variable holds an integer in [1, 17].
int output_precision();

/// Formats a double with output_precision() significant digits ("%.*g").
std::string fmt(double v);

}  // namespace wbam
