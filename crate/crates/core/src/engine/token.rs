use crate::model::TokenColor;

/// A token in flight: its color plus bookkeeping for end-to-end delays.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenInstance {
    /// Unique per run, in creation order.
    pub id: u64,
    pub color: TokenColor,
    /// Emission counter of the source firing (or initial token) this token descends from.
    pub origin_id: u64,
    pub origin_time: f64,
    pub enqueue_time: f64,
}

/// Origin inherited by tokens produced from `consumed`: the earliest origin,
/// ties broken by the smaller origin id.
///
/// # Panics
/// If `consumed` is empty.
pub fn origin_propagation(consumed: &[TokenInstance]) -> (u64, f64) {
    let first = consumed.first().expect("origin_propagation needs at least one token");
    consumed.iter().skip(1).fold((first.origin_id, first.origin_time), |(id, t), tok| {
        if tok.origin_time < t || (tok.origin_time == t && tok.origin_id < id) {
            (tok.origin_id, tok.origin_time)
        } else {
            (id, t)
        }
    })
}
