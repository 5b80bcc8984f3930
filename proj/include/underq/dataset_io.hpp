#pragma once

#include <iosfwd>
#include <string>

#include "underq/finite_mdp.hpp"

namespace underq::mdp {

// Line format:
//   underq-dataset v1, state_dim, action_dim, discrete:{0,1}, count, seed
//   state..., action..., reward, next_state..., done
// Values use 17-significant-digit decimals so a write/read cycle is
// bit-exact.
void save_dataset(const OfflineDataset& ds, std::ostream& out);
void save_dataset(const OfflineDataset& ds, const std::string& path);

OfflineDataset load_dataset(std::istream& in);
OfflineDataset load_dataset(const std::string& path);

// 17-significant-digit decimal rendering shared by every file format.
std::string format_real(double x);

}  // namespace underq::mdp
