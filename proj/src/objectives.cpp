#include "lesionsynth/objectives.hpp"

#include <cmath>

namespace lesionsynth::objectives {

bool LossReport::all_finite() const {
  return std::isfinite(g_gan) && std::isfinite(g_fm) && std::isfinite(d_real) &&
         std::isfinite(d_fake);
}

}  // namespace lesionsynth::objectives
