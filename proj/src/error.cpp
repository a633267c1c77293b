#include "alignteach/error.hpp"

namespace alignteach {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::specification: return "specification";
        case ErrorKind::range: return "range";
        case ErrorKind::dimension: return "dimension";
        case ErrorKind::degenerate_input: return "degenerate-input";
        case ErrorKind::no_alternative: return "no-alternative";
        case ErrorKind::cannot_classify: return "cannot-classify";
        case ErrorKind::evaluation: return "evaluation";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::insufficient_data: return "insufficient-data";
        case ErrorKind::empty_curve: return "empty-curve";
        case ErrorKind::config: return "config";
        case ErrorKind::coverage: return "coverage";
        case ErrorKind::sampling: return "sampling";
        case ErrorKind::validation: return "validation";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

}  // namespace alignteach
