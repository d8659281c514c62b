#pragma once

#include "gts/ir.hpp"
#include "gts/storage.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace gts {

enum class BackendId { debug, vec, gen };

std::string_view to_string(BackendId id);

/// Throws UnknownBackend (listing the supported ids) for anything else.
BackendId parse_backend(std::string_view name);

/// Comma-separated list of supported backend ids.
std::string supported_backends();

/// Storage layout each backend expects: debug and vec use (0,1,2) so k is
/// contiguous; gen uses (2,1,0) so its innermost i loop is contiguous.
LayoutSpec default_layout(BackendId id);

/// One api field as seen by an executable.
struct FieldArgument {
  void *base = nullptr; ///< element at logical index (0,0,0) of the storage
  DType dtype = DType::f64;
  Index3 strides{0, 0, 0}; ///< in elements
  Index3 origin{0, 0, 0};  ///< storage index of compute-domain point (0,0,0)
};

struct CallArguments {
  Index3 domain{0, 0, 0};
  /// In signature order.
  std::vector<FieldArgument> fields;
  /// In signature order; f32 scalars are already rounded to float.
  std::vector<double> scalars;
  int num_threads = 1;
};

/// Reference interpreter: evaluates every statement point by point.
void run_debug(const StencilImplementation &impl, const CallArguments &args);

/// Bulk engine: evaluates every statement as whole-array operations.
void run_vec(const StencilImplementation &impl, const CallArguments &args);

} // namespace gts
