"""Exceptions shared by the kernel backends."""


class KernelError(RuntimeError):
    pass


class DensityFloorError(KernelError):
    """The density dips to zero (or below the declared floor) where the
    uniform component requires positive mass."""


class CapExceededError(KernelError):
    """A simulation safety cap (walk steps or coupling cycles) was hit."""
