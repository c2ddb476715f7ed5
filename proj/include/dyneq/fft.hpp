#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <cstring>
#include <mutex>
#include <span>

namespace dyneq {

// The FFTW planner is not reentrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Unnormalized forward/backward complex DFT of a fixed length. Owns its own
// aligned work buffer; a single instance must not be used concurrently.
class FourierTransform {
 public:
  explicit FourierTransform(std::size_t n) : n_(n) {
    buffer_ = fftw_alloc_complex(n_);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_1d(static_cast<int>(n_), buffer_, buffer_,
                                FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(static_cast<int>(n_), buffer_, buffer_,
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  }

  FourierTransform(const FourierTransform& other)
      : FourierTransform(other.n_) {}
  FourierTransform& operator=(const FourierTransform&) = delete;

  ~FourierTransform() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(buffer_);
  }

  std::size_t size() const noexcept { return n_; }

  void forward(std::span<std::complex<double>> data) {
    run(forward_, data);
  }

  // Inverse transform including the 1/n factor.
  void backward(std::span<std::complex<double>> data) {
    run(backward_, data);
    const double inv = 1.0 / static_cast<double>(n_);
    for (auto& z : data) z *= inv;
  }

 private:
  void run(fftw_plan plan, std::span<std::complex<double>> data) {
    std::memcpy(buffer_, data.data(), n_ * sizeof(fftw_complex));
    fftw_execute(plan);
    std::memcpy(data.data(), buffer_, n_ * sizeof(fftw_complex));
  }

  std::size_t n_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace dyneq
