#include "fee/sobol.hpp"

#include "fee/errors.hpp"
#include "fee/rng.hpp"

#include <bit>
#include <stdexcept>

namespace fee {

namespace {

// Primitive-polynomial degree s, encoded inner coefficients a, and initial
// odd direction integers m_1..m_s per dimension (dimension 1 is the plain
// van der Corput radical inverse and needs no entry).
struct DimInit {
    int s;
    std::uint32_t a;
    std::uint32_t m[7];
};

const DimInit kDimInit[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 57}},
    {7, 4, {1, 3, 3, 7, 9, 13, 3}},
};

} // namespace

SobolSequence::SobolSequence(int dim, std::uint64_t shift_seed) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim)
        throw InvalidInput("SobolSequence supports 1.." +
                           std::to_string(kMaxDim) + " dimensions, got " +
                           std::to_string(dim));

    dirs_.assign(static_cast<std::size_t>(dim) * kBits, 0);
    state_.assign(static_cast<std::size_t>(dim), 0);
    shift_.assign(static_cast<std::size_t>(dim), 0);

    // Dimension 0: van der Corput, v_j = 2^(31-j).
    for (int j = 0; j < kBits; ++j)
        dirs_[static_cast<std::size_t>(j)] = 1u << (kBits - 1 - j);

    for (int d = 1; d < dim; ++d) {
        const DimInit& di = kDimInit[d - 1];
        const int s = di.s;
        std::uint32_t* v = &dirs_[static_cast<std::size_t>(d) * kBits];
        for (int j = 0; j < s; ++j) {
            // m_j must be odd and below 2^(j+1) for a valid generator matrix
            if (di.m[j] % 2 == 0 || di.m[j] >= (1u << (j + 1)))
                throw std::logic_error("corrupt direction-number table");
            v[j] = di.m[j] << (kBits - 1 - j);
        }
        for (int j = s; j < kBits; ++j) {
            v[j] = v[j - s] ^ (v[j - s] >> s);
            for (int k = 1; k < s; ++k)
                if ((di.a >> (s - 1 - k)) & 1u)
                    v[j] ^= v[j - k];
        }
    }

    if (shift_seed != 0) {
        std::uint64_t st = shift_seed;
        for (int d = 0; d < dim; ++d)
            shift_[static_cast<std::size_t>(d)] =
                static_cast<std::uint32_t>(splitmix64(st) >> 32);
    }
}

void SobolSequence::next(double* out) {
    if (index_ > 0) {
        const int c = std::countr_zero(index_);
        for (int d = 0; d < dim_; ++d)
            state_[static_cast<std::size_t>(d)] ^=
                dirs_[static_cast<std::size_t>(d) * kBits + c];
    }
    for (int d = 0; d < dim_; ++d) {
        std::uint32_t bits = state_[static_cast<std::size_t>(d)] ^
                             shift_[static_cast<std::size_t>(d)];
        out[d] = static_cast<double>(bits) * 0x1p-32;
    }
    ++index_;
}

std::vector<double> SobolSequence::next_point() {
    std::vector<double> p(static_cast<std::size_t>(dim_));
    next(p.data());
    return p;
}

} // namespace fee
