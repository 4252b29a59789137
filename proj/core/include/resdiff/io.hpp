#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "resdiff/tensor.hpp"

namespace resdiff {

/// Shortest round-trippable decimal rendering (17 significant digits).
std::string format_g17(double v);

/// Batch tensor to CSV: header "id,dim0,dim1,...", one row per leading index.
void write_samples_csv(std::ostream& os, const Tensor& batch);
void write_samples_csv(const std::string& path, const Tensor& batch);
Tensor read_samples_csv(const std::string& path);

/// 8-bit binary PGM (P5). Values are mapped linearly from [-1, 1] to
/// [0, 255] and clamped.
void write_pgm(const std::string& path, const Tensor& image, std::size_t width,
               std::size_t height);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace resdiff
