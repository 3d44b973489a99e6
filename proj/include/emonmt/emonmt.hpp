#pragma once

#include "emonmt/bleu.hpp"
#include "emonmt/bpe.hpp"
#include "emonmt/corpus.hpp"
#include "emonmt/decode.hpp"
#include "emonmt/digest.hpp"
#include "emonmt/emotion.hpp"
#include "emonmt/error.hpp"
#include "emonmt/harness.hpp"
#include "emonmt/model/checkpoint.hpp"
#include "emonmt/model/config.hpp"
#include "emonmt/model/loss.hpp"
#include "emonmt/model/optim.hpp"
#include "emonmt/model/params.hpp"
#include "emonmt/model/schedule.hpp"
#include "emonmt/model/train.hpp"
#include "emonmt/model/transformer.hpp"
#include "emonmt/random.hpp"
#include "emonmt/text.hpp"
