#pragma once

#include <stdexcept>
#include <string>

namespace trenh {

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    UnsupportedFormat,
    TruncatedFile,
    BadChannelCount,
    Io,
    UnknownCatalog,
    UnknownOperation,
    BadMagic,
    VersionMismatch,
    ShapeMismatch,
    CatalogMismatch,
    NonFiniteLoss,
    Config,
    Dataset,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to a stable exit code without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace trenh
