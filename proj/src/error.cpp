#include "treenhance/error.hpp"

namespace trenh {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::DimensionMismatch: return "dimension mismatch";
        case ErrorKind::UnsupportedFormat: return "unsupported format";
        case ErrorKind::TruncatedFile: return "truncated file";
        case ErrorKind::BadChannelCount: return "bad channel count";
        case ErrorKind::Io: return "i/o error";
        case ErrorKind::UnknownCatalog: return "unknown catalog";
        case ErrorKind::UnknownOperation: return "unknown operation";
        case ErrorKind::BadMagic: return "bad magic";
        case ErrorKind::VersionMismatch: return "version mismatch";
        case ErrorKind::ShapeMismatch: return "shape mismatch";
        case ErrorKind::CatalogMismatch: return "catalog mismatch";
        case ErrorKind::NonFiniteLoss: return "non-finite loss";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Dataset: return "dataset error";
    }
    return "error";
}

}  // namespace trenh
