#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctnorm/compare.hpp"

namespace ctnorm::radiomics {

// Minimal self-contained box-and-whisker plot; one box per method.
void write_boxplot_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<std::pair<std::string, BoxStats>>& boxes);

} // namespace ctnorm::radiomics
