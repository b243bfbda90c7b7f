// Copyright 2026 The MelCap Authors. All Rights Reserved.
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

#ifndef MELCAP_MELCAP_HPP_
#define MELCAP_MELCAP_HPP_

#include "melcap/activations.hpp"
#include "melcap/bytes.hpp"
#include "melcap/config.hpp"
#include "melcap/fft.hpp"
#include "melcap/formats.hpp"
#include "melcap/frontend.hpp"
#include "melcap/losses.hpp"
#include "melcap/metrics.hpp"
#include "melcap/rng.hpp"
#include "melcap/theory.hpp"
#include "melcap/vocoder.hpp"
#include "melcap/vq.hpp"
#include "melcap/wav.hpp"

#endif  // MELCAP_MELCAP_HPP_
