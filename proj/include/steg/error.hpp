#pragma once

#include <stdexcept>
#include <string>

namespace steg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define STEG_DEFINE_ERROR(Name)          \
    struct Name : Error {                \
        using Error::Error;              \
    }

// engine
STEG_DEFINE_ERROR(ShapeMismatch);
STEG_DEFINE_ERROR(UnknownPrimitive);
STEG_DEFINE_ERROR(NonFiniteOutput);
STEG_DEFINE_ERROR(NonScalarLoss);
STEG_DEFINE_ERROR(DetachedLoss);
STEG_DEFINE_ERROR(NonDeterministicFunction);
STEG_DEFINE_ERROR(NonFiniteGradient);

// network
STEG_DEFINE_ERROR(InvalidConfig);
STEG_DEFINE_ERROR(LengthMismatch);
STEG_DEFINE_ERROR(NonFiniteTheta);

// corruption channel
STEG_DEFINE_ERROR(DegenerateQuad);
STEG_DEFINE_ERROR(BadDimensions);

// codec
STEG_DEFINE_ERROR(BudgetTooSmall);
STEG_DEFINE_ERROR(BadLength);

// training / eval
STEG_DEFINE_ERROR(EmptyDataset);
STEG_DEFINE_ERROR(UnreadableImage);
STEG_DEFINE_ERROR(DivergedLoss);
STEG_DEFINE_ERROR(EmptyInput);

// checkpoint / io
STEG_DEFINE_ERROR(BadMagic);
STEG_DEFINE_ERROR(CorruptTensor);
STEG_DEFINE_ERROR(VersionUnsupported);
STEG_DEFINE_ERROR(IoFailure);
STEG_DEFINE_ERROR(ImageUnreadable);

// registry / verify
STEG_DEFINE_ERROR(IdCollision);
STEG_DEFINE_ERROR(EmptyText);

#undef STEG_DEFINE_ERROR

}  // namespace steg
