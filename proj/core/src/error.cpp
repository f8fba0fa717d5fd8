// SPDX-License-Identifier: Apache-2.0
#include "mvsde/error.hpp"

namespace mvsde {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::EmptySamples: return "EmptySamples";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::DimensionNotOne: return "DimensionNotOne";
        case Errc::UnsortableNaN: return "UnsortableNaN";
        case Errc::SizeMismatch: return "SizeMismatch";
        case Errc::TooLarge: return "TooLarge";
        case Errc::InvalidMeasure: return "InvalidMeasure";
        case Errc::NegativeParameter: return "NegativeParameter";
        case Errc::MissingConstants: return "MissingConstants";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::NonFiniteState: return "NonFiniteState";
        case Errc::GridMismatch: return "GridMismatch";
        case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

NonFiniteStateError::NonFiniteStateError(std::size_t step, std::size_t particle)
    : Error(Errc::NonFiniteState,
            "non-finite state at step " + std::to_string(step) + " (particle " +
                std::to_string(particle) + ")"),
      step_(step),
      particle_(particle) {}

}  // namespace mvsde
