#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>

namespace cbench::detail {

// Smallest n >= x whose only prime factors are 2, 3, 5 and 7.
int next_fast_size(int x);

// fftw_malloc'd complex buffer.
class ComplexBuffer {
 public:
  explicit ComplexBuffer(std::size_t n);
  ~ComplexBuffer();
  ComplexBuffer(const ComplexBuffer&) = delete;
  ComplexBuffer& operator=(const ComplexBuffer&) = delete;
  ComplexBuffer(ComplexBuffer&& other) noexcept;
  ComplexBuffer& operator=(ComplexBuffer&&) = delete;

  fftw_complex* get() { return data_; }
  std::complex<double>* as_complex() { return reinterpret_cast<std::complex<double>*>(data_); }
  std::size_t size() const { return size_; }
  void zero();

 private:
  fftw_complex* data_ = nullptr;
  std::size_t size_ = 0;
};

// Forward/backward 2-D complex plans for one geometry. Planning goes through
// a process-wide lock; execute() may be called concurrently on distinct
// buffers allocated by ComplexBuffer.
class Fft2d {
 public:
  Fft2d(int rows, int cols);
  ~Fft2d();
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * cols_; }

  void forward(ComplexBuffer& in, ComplexBuffer& out) const;
  // Unnormalized inverse.
  void backward(ComplexBuffer& in, ComplexBuffer& out) const;

 private:
  int rows_;
  int cols_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace cbench::detail
