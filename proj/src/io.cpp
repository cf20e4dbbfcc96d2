#include "wbam/io.hpp"

#include <cstdio>
#include <cstdlib>

namespace wbam {

int output_precision() {
  const char* env = std::getenv("WBAM_PRECISION");
  if (env == nullptr) return 17;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1 || v > 17) return 17;
  return static_cast<int>(v);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", output_precision(), v);
  return buf;
}

}  // namespace wbam
