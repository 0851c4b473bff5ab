#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sitsgraph {

enum class Errc {
    MissingFile,
    ShapeMismatch,
    NonMonotonicTimestamps,
    UnknownBand,
    InvalidSpec,
    EmptyImage,
    InvalidSegmentCount,
    DimMismatch,
    TooFewNodes,
    InvalidLag,
    UnknownNode,
    AllIgnored,
    ConfigMismatch,
    NoLabels,
    LengthMismatch,
    MeshMismatch,
    SiteLeakage,
    NoData,
    EmptyMatrix,
    InvalidArgument,
    ParseError,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures surface as this exception; `code()` identifies the
// failing precondition so callers (and the CLI) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace sitsgraph
