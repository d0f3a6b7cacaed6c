#include "pairkit/error.hpp"
#include "pairkit/hash.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace pairkit {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Io: return "io";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Coverage: return "coverage";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Numeric: return "numeric";
    }
    return "unknown";
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return hex64(fnv1a64(bytes));
}

}  // namespace pairkit
