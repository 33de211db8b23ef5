#pragma once

namespace vareg::train {

// Linear warmup from 0 to peak_lr over ceil(warmup_ratio * total_steps)
// steps, then linear decay to 0 at total_steps.
double lr_at_step(long long step, long long total_steps, double peak_lr,
                  double warmup_ratio);

}  // namespace vareg::train
