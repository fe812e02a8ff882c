#pragma once

#include <stdexcept>
#include <string>

namespace lsg {

// Base class for every error this library raises on bad input or protocol
// failure. Programming errors (violated internal invariants) use the
// standard exceptions instead.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidDistribution : Error { using Error::Error; };
struct SupportMismatch     : Error { using Error::Error; };
struct UnknownState        : Error { using Error::Error; };
struct PrefixOverrun       : Error { using Error::Error; };
struct ProviderTimeout     : Error { using Error::Error; };
struct ProtocolError       : Error { using Error::Error; };
struct RangeViolation      : Error { using Error::Error; };
struct MalformedTimeline   : Error { using Error::Error; };
struct EmptyReference      : Error { using Error::Error; };
struct CorpusMismatch      : Error { using Error::Error; };
struct LengthMismatch      : Error { using Error::Error; };
struct ParseError          : Error { using Error::Error; };
struct DuplicateId         : Error { using Error::Error; };
struct EmptyGrid           : Error { using Error::Error; };
struct MissingDiagnostics  : Error { using Error::Error; };

}  // namespace lsg
