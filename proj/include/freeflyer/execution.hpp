// Copyright 2026 The freeflyer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FREEFLYER_EXECUTION_HPP_
#define FREEFLYER_EXECUTION_HPP_

namespace freeflyer {

// Selects the OpenMP or the plain-loop variant of a data-parallel kernel.
// Both produce bit-identical results.
enum class Execution { kSerial, kParallel };

}  // namespace freeflyer

#endif  // FREEFLYER_EXECUTION_HPP_
