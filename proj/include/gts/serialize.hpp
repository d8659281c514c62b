#pragma once

#include "gts/ir.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gts {

/// Version tag written at the start of every canonical byte sequence.
inline constexpr std::string_view kCanonicalSchema = "gts-ir-v1";

/// Deterministic, platform-independent encoding of the IR. Source positions
/// are excluded, so reformatting the program text does not change the bytes.
std::vector<std::uint8_t> canonical_serialize(const StencilDefinition &def);
std::vector<std::uint8_t> canonical_serialize(const StencilImplementation &impl);

enum class IrStage { definition, implementation };

/// Human-readable, diff-friendly listing. The first line is
/// `# gts-ir v1 definition` or `# gts-ir v1 implementation`.
std::string dump_ir(const StencilDefinition &def);
std::string dump_ir(const StencilImplementation &impl);

/// Expression in the fully parenthesized dump syntax.
std::string format_expr(const Expr &expr);

/// Shortest round-trip decimal form of `value`, always containing a `.`,
/// an exponent or a non-finite marker.
std::string format_number(double value);

struct Fingerprint {
  std::array<std::uint8_t, 32> digest{};

  std::string hex() const;
  /// First 8 hex digits, used in generated symbol names.
  std::string short_hex() const;

  friend bool operator==(const Fingerprint &, const Fingerprint &) = default;
};

/// SHA-256 of `data`.
Fingerprint sha256(std::string_view data);

/// Digest over the canonical definition bytes, the backend id, the externals
/// (sorted, typed), the configuration string and the toolchain string.
Fingerprint fingerprint(const StencilDefinition &def, std::string_view backend_id,
                        const ExternalsBinding &externals, std::string_view toolchain,
                        std::string_view config = {});

} // namespace gts
