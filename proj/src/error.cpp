#include "raycalib/error.hpp"

namespace raycalib {

std::string_view error_kind_name(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::RayOutsideDomain: return "RayOutsideDomain";
    case ErrorKind::NonInvertiblePixel: return "NonInvertiblePixel";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::AntipodalRay: return "AntipodalRay";
    case ErrorKind::ThetaOutOfDomain: return "ThetaOutOfDomain";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::InvalidFocal: return "InvalidFocal";
    case ErrorKind::BoundInfeasible: return "BoundInfeasible";
    case ErrorKind::SingularNormalMatrix: return "SingularNormalMatrix";
    case ErrorKind::NoConsensus: return "NoConsensus";
    case ErrorKind::BorderUnprojectionFailed: return "BorderUnprojectionFailed";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::FovOutOfRange: return "FovOutOfRange";
    case ErrorKind::NewtonDivergence: return "NewtonDivergence";
    case ErrorKind::UnsupportedModelKind: return "UnsupportedModelKind";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::FileNotFound: return "FileNotFound";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

std::string_view error_module(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::RayOutsideDomain:
    case ErrorKind::NonInvertiblePixel:
    case ErrorKind::UnsupportedFamily:
        return "camera_models";
    case ErrorKind::AntipodalRay:
    case ErrorKind::ThetaOutOfDomain:
    case ErrorKind::DimensionMismatch:
        return "fov_field";
    case ErrorKind::DegenerateGeometry:
    case ErrorKind::InvalidFocal:
    case ErrorKind::BoundInfeasible:
    case ErrorKind::SingularNormalMatrix:
    case ErrorKind::NoConsensus:
        return "calibrator";
    case ErrorKind::BorderUnprojectionFailed:
    case ErrorKind::EmptyInput:
        return "metrics";
    case ErrorKind::FovOutOfRange:
    case ErrorKind::NewtonDivergence:
    case ErrorKind::UnsupportedModelKind:
        return "synth";
    case ErrorKind::ParseError:
    case ErrorKind::FileNotFound:
    case ErrorKind::InvalidArgument:
        return "cli";
    }
    return "unknown";
}

bool is_input_error(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ParseError:
    case ErrorKind::FileNotFound:
    case ErrorKind::InvalidArgument:
    case ErrorKind::UnsupportedModelKind:
    case ErrorKind::UnsupportedFamily:
    case ErrorKind::DimensionMismatch:
        return true;
    default:
        return false;
    }
}

} // namespace raycalib
