#pragma once

#include <string>

#include "splat/core/types.hpp"

namespace splat {

// PNG (8-bit, alpha discarded) or PPM (P6), chosen by file content on load
// and by extension on save. Channel values map linearly to [0,1].
ImageBuffer load_image(const std::string& path);
void save_image(const ImageBuffer& image, const std::string& path);

}  // namespace splat
