// Timing comparison between the serial reference kernels and the OpenMP
// ones, plus an end-to-end encoder forward. Not a test; run manually:
//   ./build/bench/bench_kernels [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vareg/kernels.hpp"
#include "vareg/mat.hpp"
#include "vareg/model/encoder.hpp"

namespace ker = vareg::kernels;
using vareg::Mat;

namespace {

using Clock = std::chrono::steady_clock;

double time_of(const std::function<void()>& fn, int repeats) {
  // one warmup, then best-of-N
  fn();
  double best = 1e100;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    fn();
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (ms < best) best = ms;
  }
  return best;
}

void fill_random(std::vector<double>& v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& x : v) x = dist(rng);
}

void report(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-28s serial %10.3f ms   openmp %10.3f ms   speedup %5.2fx\n",
              name, serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 5;
  std::mt19937_64 rng(42);

  if (!ker::openmp_compiled())
    std::printf("note: built without OpenMP, both columns run the serial path\n");

  for (const int n : {64, 128, 256, 512}) {
    std::vector<double> a(static_cast<std::size_t>(n) * n);
    std::vector<double> b(a.size()), c(a.size());
    fill_random(a, rng);
    fill_random(b, rng);
    const auto run = [&] { ker::matmul_nn(a.data(), b.data(), c.data(), n, n, n); };
    ker::set_backend(ker::Backend::serial);
    const double serial_ms = time_of(run, repeats);
    ker::set_backend(ker::Backend::openmp);
    const double omp_ms = time_of(run, repeats);
    char label[64];
    std::snprintf(label, sizeof label, "matmul_nn %dx%dx%d", n, n, n);
    report(label, serial_ms, omp_ms);
  }

  {
    const int rows = 4096, cols = 512;
    std::vector<double> x(static_cast<std::size_t>(rows) * cols);
    std::vector<double> y(x.size()), gain(cols, 1.0), bias(cols, 0.0);
    std::vector<double> mean(rows), rstd(rows);
    fill_random(x, rng);
    const auto run = [&] {
      ker::layernorm_forward(x.data(), gain.data(), bias.data(), y.data(),
                             mean.data(), rstd.data(), rows, cols);
    };
    ker::set_backend(ker::Backend::serial);
    const double serial_ms = time_of(run, repeats);
    ker::set_backend(ker::Backend::openmp);
    const double omp_ms = time_of(run, repeats);
    report("layernorm 4096x512", serial_ms, omp_ms);
  }

  {
    const int rows = 2048, cols = 512;
    std::vector<double> x(static_cast<std::size_t>(rows) * cols);
    fill_random(x, rng);
    std::vector<double> work = x;
    const auto run = [&] {
      work = x;
      ker::softmax_rows(work.data(), rows, cols);
    };
    ker::set_backend(ker::Backend::serial);
    const double serial_ms = time_of(run, repeats);
    ker::set_backend(ker::Backend::openmp);
    const double omp_ms = time_of(run, repeats);
    report("softmax 2048x512", serial_ms, omp_ms);
  }

  {
    std::vector<double> x(1 << 22), y(x.size());
    fill_random(x, rng);
    const auto run = [&] { ker::gelu_forward(x.data(), y.data(), x.size()); };
    ker::set_backend(ker::Backend::serial);
    const double serial_ms = time_of(run, repeats);
    ker::set_backend(ker::Backend::openmp);
    const double omp_ms = time_of(run, repeats);
    report("gelu 4M", serial_ms, omp_ms);
  }

  {
    // end to end: encode a batch of synthetic sentences
    const auto encoder = vareg::model::Encoder::from_checkpoint("desk-large");
    std::vector<std::string> texts;
    for (int i = 0; i < 64; ++i) {
      std::string t;
      for (int w = 0; w < 24; ++w) t += "word" + std::to_string(rng() % 500) + " ";
      texts.push_back(t);
    }
    const auto run = [&] { (void)encoder.encode_pool(texts); };
    ker::set_backend(ker::Backend::serial);
    const double serial_ms = time_of(run, repeats);
    ker::set_backend(ker::Backend::openmp);
    const double omp_ms = time_of(run, repeats);
    report("encode_pool 64 texts", serial_ms, omp_ms);
  }

  return 0;
}
