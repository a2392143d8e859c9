#pragma once

#include <string>

#include "jmppc/gof.hpp"

namespace jmppc {

// Standalone plot of one check: grey replicate curves under the black
// observed curve, dashed band when present, framed axes with tick labels.
void write_check_svg(const CheckReport& report, const std::string& path, int width = 720,
                     int height = 480);

}  // namespace jmppc
