// Copyright 2026 The afcdepth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef AFCDEPTH_APP_HPP
#define AFCDEPTH_APP_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace afcdepth {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModuleError = 1;
inline constexpr int kExitConfigError = 2;

/// Runs the command line `args` (without the program name). Artifacts go to
/// the --out directory; `out` receives a short summary and `err` receives
/// structured error messages.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace afcdepth

#endif  // AFCDEPTH_APP_HPP
