#include "mmwave/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <stdexcept>

namespace mmwave {

namespace {
// FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Fft2D::Fft2D(int rows, int cols)
    : rows_(rows), cols_(cols), buf_(static_cast<std::size_t>(rows) * cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("Fft2D: bad size");
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan_ = fftw_plan_dft_2d(rows, cols, reinterpret_cast<fftw_complex*>(buf_.data()),
                             reinterpret_cast<fftw_complex*>(buf_.data()),
                             FFTW_FORWARD, FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("Fft2D: fftw plan failed");
}

Fft2D::~Fft2D() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void Fft2D::forward(const std::complex<double>* in, std::complex<double>* out) {
    std::memcpy(buf_.data(), in, buf_.size() * sizeof(std::complex<double>));
    fftw_execute(static_cast<fftw_plan>(plan_));
    std::memcpy(out, buf_.data(), buf_.size() * sizeof(std::complex<double>));
}

void Fft2D::forward_padded(std::span<const std::complex<double>> in, int in_rows,
                           int in_cols, std::complex<double>* out) {
    if (in_rows > rows_ || in_cols > cols_ ||
        in.size() != static_cast<std::size_t>(in_rows) * in_cols)
        throw std::invalid_argument("Fft2D: padded input larger than transform");
    std::fill(buf_.begin(), buf_.end(), std::complex<double>{});
    for (int n = 0; n < in_rows; ++n)
        std::memcpy(buf_.data() + static_cast<std::size_t>(n) * cols_,
                    in.data() + static_cast<std::size_t>(n) * in_cols,
                    static_cast<std::size_t>(in_cols) * sizeof(std::complex<double>));
    fftw_execute(static_cast<fftw_plan>(plan_));
    std::memcpy(out, buf_.data(), buf_.size() * sizeof(std::complex<double>));
}

}  // namespace mmwave
