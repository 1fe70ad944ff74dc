#pragma once

#include <string>

#include "prosospeak/common.hpp"

namespace prosospeak {

/// Classification target: authentic speech or a deepfake.
enum class Label { REAL, DF };

inline std::string to_string(Label l) { return l == Label::REAL ? "REAL" : "DF"; }

inline Label label_from_string(const std::string& s) {
  if (s == "REAL") return Label::REAL;
  if (s == "DF") return Label::DF;
  fail("unknown label '" + s + "' (expected REAL or DF)");
}

/// SVM side of the label map: REAL -> -1, DF -> +1.
inline double label_sign(Label l) { return l == Label::DF ? 1.0 : -1.0; }

}  // namespace prosospeak
