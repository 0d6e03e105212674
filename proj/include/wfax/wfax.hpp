//
// Copyright 2026 The wfax Authors
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
//

#pragma once

#include "wfax/abstraction.hpp"
#include "wfax/augment.hpp"
#include "wfax/builder.hpp"
#include "wfax/common.hpp"
#include "wfax/corpus.hpp"
#include "wfax/digest.hpp"
#include "wfax/pipeline.hpp"
#include "wfax/runtime.hpp"
#include "wfax/synthetic.hpp"
#include "wfax/teacher.hpp"
