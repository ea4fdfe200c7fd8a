#pragma once

#include <complex>
#include <span>
#include <vector>

namespace mmwave {

/// RAII wrapper around an FFTW complex-to-complex 2D forward transform
/// of fixed size rows x cols (row-major). Plan creation is serialized
/// internally; execution is safe from the owning thread.
class Fft2D {
public:
    Fft2D(int rows, int cols);
    ~Fft2D();
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    /// out[i*cols+j] = sum_{n,m} in[n*cols+m] * exp(-2i*pi*(n*i/rows + m*j/cols)).
    /// in and out must each hold rows*cols elements; may alias.
    void forward(const std::complex<double>* in, std::complex<double>* out);

    /// Zero-pad a smaller row-major block into the transform size, then run.
    void forward_padded(std::span<const std::complex<double>> in, int in_rows,
                        int in_cols, std::complex<double>* out);

private:
    int rows_;
    int cols_;
    void* plan_;  // fftw_plan
    std::vector<std::complex<double>> buf_;
};

}  // namespace mmwave
