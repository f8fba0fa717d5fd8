// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mvsde {

enum class Errc {
    EmptySamples,
    DimensionMismatch,
    DimensionNotOne,
    UnsortableNaN,
    SizeMismatch,
    TooLarge,
    InvalidMeasure,
    NegativeParameter,
    MissingConstants,
    InvalidArgument,
    NonFiniteState,
    GridMismatch,
    IoError,
};

std::string_view to_string(Errc code) noexcept;

/// Library error carrying a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// Raised when a solver produces NaN/Inf; `step()` is the index of the
/// step whose update failed.
class NonFiniteStateError : public Error {
public:
    NonFiniteStateError(std::size_t step, std::size_t particle);

    [[nodiscard]] std::size_t step() const noexcept { return step_; }
    [[nodiscard]] std::size_t particle() const noexcept { return particle_; }

private:
    std::size_t step_;
    std::size_t particle_;
};

}  // namespace mvsde
