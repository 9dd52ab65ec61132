#pragma once

#include <cstdint>
#include <vector>

namespace fee {

// Sobol low-discrepancy sequence, up to 21 dimensions at 32-bit resolution,
// generated in gray-code order. A nonzero shift_seed applies a per-dimension
// XOR digital shift (scrambling) derived from the seed; zero leaves the raw
// sequence (whose first point is the origin) untouched. Digital shifting
// preserves the dyadic equidistribution of the net.
class SobolSequence {
public:
    static constexpr int kMaxDim = 21;
    static constexpr int kBits = 32;

    explicit SobolSequence(int dim, std::uint64_t shift_seed = 0);

    int dim() const { return dim_; }
    std::uint64_t index() const { return index_; }

    // Writes the next point into out[0..dim): values in [0, 1).
    void next(double* out);
    std::vector<double> next_point();

private:
    int dim_;
    std::uint64_t index_ = 0;
    std::vector<std::uint32_t> dirs_;  // dim * kBits direction numbers
    std::vector<std::uint32_t> state_; // gray-code accumulator per dim
    std::vector<std::uint32_t> shift_; // digital shift per dim
};

} // namespace fee
