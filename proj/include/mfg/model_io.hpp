#pragma once

#include "mfg/model.hpp"

#include <string>
#include <string_view>

namespace mfg {

// Model file format, one entry per line:
//
//   # comment
//   dim = 2
//   horizon = 0.11
//   eta = 1 0 0 1          (row-major, commas or whitespace)
//   Q = ...   R = ...   Qbar = ...   S = ...   QT = ...
//   label = free text      (optional)
//
// Every key except `label` is required; duplicates are rejected.

LqModel parse_model(std::string_view text);
LqModel read_model_file(const std::string& path);

/// Inverse of parse_model; numbers are printed with 17 significant digits so
/// parse_model(serialize_model(m)) == m bit for bit.
std::string serialize_model(const LqModel& model);
void write_model_file(const std::string& path, const LqModel& model);

} // namespace mfg
