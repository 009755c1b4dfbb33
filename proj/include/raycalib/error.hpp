#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace raycalib {

enum class ErrorKind {
    // camera_models
    RayOutsideDomain,
    NonInvertiblePixel,
    UnsupportedFamily,
    // fov_field
    AntipodalRay,
    ThetaOutOfDomain,
    DimensionMismatch,
    // calibrator
    DegenerateGeometry,
    InvalidFocal,
    BoundInfeasible,
    SingularNormalMatrix,
    NoConsensus,
    // metrics
    BorderUnprojectionFailed,
    EmptyInput,
    // synth
    FovOutOfRange,
    NewtonDivergence,
    UnsupportedModelKind,
    // io / cli
    ParseError,
    FileNotFound,
    InvalidArgument,
};

std::string_view error_kind_name(ErrorKind kind);

/// Name of the module an error kind originates from ("camera_models", "calibrator", ...).
std::string_view error_module(ErrorKind kind);

/// True for errors caused by bad input (files, flags, model strings) rather than numerics.
bool is_input_error(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace raycalib
