#include "sarqc/parallel.hpp"

#include <cstdlib>
#include <string>

namespace sarqc {

std::size_t default_jobs() {
  const char* env = std::getenv("SARQC_JOBS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(env, &pos);
    if (pos == std::string(env).size() && v >= 1) return v;
  } catch (const std::exception&) {
  }
  return 1;
}

}  // namespace sarqc
