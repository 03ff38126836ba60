#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <ios>

namespace changeret {

/// Writes via `<path>.tmp` and renames into place so readers never observe a
/// partially written file.
void write_atomically(const std::filesystem::path& path, std::ios::openmode mode,
                      const std::function<void(std::ostream&)>& writer);

}  // namespace changeret
