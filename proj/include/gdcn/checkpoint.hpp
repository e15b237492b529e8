#pragma once

#include <string>

#include "gdcn/model.hpp"

namespace gdcn {

// Layout: magic "GDCNCKPT", u64 LE manifest length, JSON manifest, then one
// blob of little-endian f64 in manifest order. Matrices serialize row by
// row. Tensor names: emb.{f}, align.{f}, cross.{l}.W_c / .W_g / .b,
// dnn.{l}.W / .b, head.w, with fields and layers numbered from 0.
void save_checkpoint(const std::string& path, const Model& model);

Model load_checkpoint(const std::string& path);

// FNV-1a over the whole file; identifies a checkpoint in derived reports.
std::string file_digest(const std::string& path);

}  // namespace gdcn
