#pragma once

// Umbrella header.

#include "qmitm/adversary.hpp"
#include "qmitm/bb84.hpp"
#include "qmitm/channels.hpp"
#include "qmitm/ciphers.hpp"
#include "qmitm/core.hpp"
#include "qmitm/detection.hpp"
#include "qmitm/eve_interlock.hpp"
#include "qmitm/harness.hpp"
#include "qmitm/interlock.hpp"
#include "qmitm/kernel.hpp"
#include "qmitm/session.hpp"
#include "qmitm/xor_channel.hpp"
