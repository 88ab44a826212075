#include "fft.hpp"

#include <mutex>
#include <new>

namespace cbench::detail {
namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

int next_fast_size(int x) {
  for (int n = x < 1 ? 1 : x;; ++n) {
    int m = n;
    for (int p : {2, 3, 5, 7})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

ComplexBuffer::ComplexBuffer(std::size_t n) : size_(n) {
  data_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n ? n : 1)));
  if (!data_) throw std::bad_alloc();
}

ComplexBuffer::~ComplexBuffer() {
  if (data_) fftw_free(data_);
}

ComplexBuffer::ComplexBuffer(ComplexBuffer&& other) noexcept : data_(other.data_), size_(other.size_) {
  other.data_ = nullptr;
  other.size_ = 0;
}

void ComplexBuffer::zero() {
  for (std::size_t i = 0; i < size_; ++i) data_[i][0] = data_[i][1] = 0.0;
}

Fft2d::Fft2d(int rows, int cols) : rows_(rows), cols_(cols) {
  ComplexBuffer a(size()), b(size());
  std::lock_guard lock(planner_mutex());
  // FFTW_ESTIMATE keeps plans (and therefore results) independent of timing.
  forward_ = fftw_plan_dft_2d(rows, cols, a.get(), b.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_2d(rows, cols, a.get(), b.get(), FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft2d::~Fft2d() {
  std::lock_guard lock(planner_mutex());
  if (forward_) fftw_destroy_plan(forward_);
  if (backward_) fftw_destroy_plan(backward_);
}

void Fft2d::forward(ComplexBuffer& in, ComplexBuffer& out) const {
  fftw_execute_dft(forward_, in.get(), out.get());
}

void Fft2d::backward(ComplexBuffer& in, ComplexBuffer& out) const {
  fftw_execute_dft(backward_, in.get(), out.get());
}

}  // namespace cbench::detail
