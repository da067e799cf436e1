#include "hyperfill/fill.hpp"

namespace hyperfill {

template FillResult<2> fill_parallel<2>(const FillConfig<2>&);
template FillResult<3> fill_parallel<3>(const FillConfig<3>&);
template FillResult<2> fill_sequential<2>(const FillConfig<2>&, std::span<const Point<2>>);
template FillResult<3> fill_sequential<3>(const FillConfig<3>&, std::span<const Point<3>>);

}  // namespace hyperfill
