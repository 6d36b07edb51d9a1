/// Cooperative cancellation hook polled between elimination steps.
///
/// The core has no clock; callers with one (the bench harness) implement this
/// on a deadline.
pub trait Interrupt {
    fn is_interrupted(&self) -> bool;
}

/// Never fires.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeverInterrupt;

impl Interrupt for NeverInterrupt {
    #[inline]
    fn is_interrupted(&self) -> bool {
        false
    }
}

impl<F: Fn() -> bool> Interrupt for F {
    #[inline]
    fn is_interrupted(&self) -> bool {
        self()
    }
}
