#pragma once

#include <filesystem>

namespace vareg::fixture {

// Writes the bundled synthetic fixture: six dataset files in three fake
// languages (word lexica + short-text sets, different adapters and
// rating scales) plus a manifest.json. Generation is deterministic, so
// the checked-in copy under fixtures/ can be reproduced at any time.
//
// Targets are constructed to be linearly recoverable from bag-of-words
// features: every vocabulary word carries a latent (valence, arousal)
// pair and a text's score is the mean of its words' latents plus small
// noise. A plain linear regression on word indicators reaches high
// correlation, which gives trained models measurable headroom.
void write_fixture(const std::filesystem::path& dir);

}  // namespace vareg::fixture
