#include "dltta/kernels.hpp"

#include <cstdlib>
#include <string>

namespace dltta::kernels {
namespace {

const Backend* find(std::string_view name) {
  if (name == "scalar") return &scalar();
  if (name == "avx2") return avx2_backend();
  if (name == "neon") return neon_backend();
  return nullptr;
}

const Backend* pick_default() {
  if (const char* env = std::getenv("DLTTA_KERNELS")) {
    if (const Backend* b = find(env)) return b;
  }
  if (const Backend* b = avx2_backend()) return b;
  if (const Backend* b = neon_backend()) return b;
  return &scalar();
}

const Backend*& active_slot() {
  static const Backend* slot = pick_default();
  return slot;
}

}  // namespace

const Backend& active() { return *active_slot(); }

bool select(std::string_view name) {
  const Backend* b = find(name);
  if (!b) return false;
  active_slot() = b;
  return true;
}

std::vector<const Backend*> available() {
  std::vector<const Backend*> out{&scalar()};
  if (const Backend* b = avx2_backend()) out.push_back(b);
  if (const Backend* b = neon_backend()) out.push_back(b);
  return out;
}

}  // namespace dltta::kernels
