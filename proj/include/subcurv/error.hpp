#pragma once
// Error taxonomy shared across the library.

#include <stdexcept>
#include <string>

namespace subcurv {

enum class ErrorKind {
    Parse,            // malformed expression or model file
    FrameDegenerate,  // frame not invertible / not a frame on the domain
    Domain,           // point or trajectory outside the declared chart box
    Integration,      // ODE solver failure (step underflow, NaN)
    Inconsistency,    // least-squares residual above tolerance (rank misread)
    UnsupportedDiagram,  // operation requires a diagram shape we do not handle
    Degenerate,       // degenerate input (e.g. LQ determinant identically 0)
    Invalid,          // invalid argument / unsupported option
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Parse: return "parse";
        case ErrorKind::FrameDegenerate: return "frame-degenerate";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Integration: return "integration";
        case ErrorKind::Inconsistency: return "inconsistency";
        case ErrorKind::UnsupportedDiagram: return "unsupported-diagram";
        case ErrorKind::Degenerate: return "degenerate";
        case ErrorKind::Invalid: return "invalid";
    }
    return "unknown";
}

}  // namespace subcurv
