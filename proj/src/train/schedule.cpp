#include "vareg/train/schedule.hpp"

#include <cmath>

#include "vareg/common.hpp"

namespace vareg::train {

double lr_at_step(long long step, long long total_steps, double peak_lr,
                  double warmup_ratio) {
  if (total_steps < 1) fail(Errc::config_error, "total_steps must be >= 1");
  if (step < 0 || step > total_steps)
    fail(Errc::config_error, "step outside [0, total_steps]");
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0)
    fail(Errc::config_error, "warmup_ratio must lie in [0, 1)");
  const long long warmup =
      static_cast<long long>(std::ceil(warmup_ratio * static_cast<double>(total_steps)));
  if (step < warmup)
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  return peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

}  // namespace vareg::train
