#include "levytrace/execution.hpp"

#include <cstdlib>
#include <string>

namespace levytrace {

int resolve_workers(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("LEVYTRACE_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  return 0;
}

}  // namespace levytrace
