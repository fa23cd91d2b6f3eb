#include "bnas/arch/checkpoint.hpp"

#include <algorithm>

#include "bnas/error.hpp"

namespace bnas::arch {
namespace {

// Copies the leading corner of `src` with extent `dims` along every axis.
Tensor leading_slice(const Tensor& src, const Shape& dims) {
  Tensor out(dims);
  const std::size_t rank = dims.size();
  std::vector<std::size_t> src_stride(rank, 1);
  for (std::size_t a = rank - 1; a > 0; --a) src_stride[a - 1] = src_stride[a] * src.dim(a);
  const std::size_t inner = dims[rank - 1];
  const std::size_t rows = out.size() / inner;
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (std::size_t a = 0; a + 1 < rank; ++a) offset += idx[a] * src_stride[a];
    std::copy_n(src.ptr() + offset, inner, out.ptr() + r * inner);
    for (std::size_t a = rank - 1; a-- > 0;) {
      if (++idx[a] < dims[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [key, value] : entries)
    if (key == name) return &value;
  return nullptr;
}

Checkpoint inherit_weights(const Checkpoint& supernet, const NetworkTemplate& tmpl, const ExpansionCode& code) {
  if (!supernet.meta.template_name.empty() && supernet.meta.template_name != tmpl.name)
    throw InputError("supernet was built from template '" + supernet.meta.template_name + "', not '" +
                     tmpl.name + "'");
  Checkpoint out;
  out.meta = {tmpl.name, code, supernet.meta.seed};
  for (const ParameterShape& p : parameter_shapes(tmpl, code)) {
    const Tensor* src = supernet.find(p.name);
    if (!src) throw InputError("supernet has no parameter '" + p.name + "'");
    if (src->rank() != p.dims.size())
      throw InputError("supernet parameter '" + p.name + "' has rank " + std::to_string(src->rank()));
    for (std::size_t a = 0; a < p.dims.size(); ++a)
      if (p.dims[a] > src->dim(a))
        throw InputError("parameter '" + p.name + "' needs " + shape_string(p.dims) + " but supernet holds " +
                         shape_string(src->dims()));
    out.entries.emplace_back(p.name, src->dims() == p.dims ? *src : leading_slice(*src, p.dims));
  }
  return out;
}

}  // namespace bnas::arch
