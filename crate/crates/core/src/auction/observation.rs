use super::settings::AuctionSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round1Award {
    None,
    Split,
}

/// What a single bidder sees: its own type and the public price history.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub own_type: f64,
    /// Zero-based index of the round about to be played.
    pub round: usize,
    pub horizon: usize,
    pub revealed_prices: Vec<f64>,
    pub own_won: bool,
    pub own_round1_award: Round1Award,
    /// The bidder has no further decisions (auction over or bidder left).
    pub terminal: bool,
}

impl Observation {
    pub fn initial(settings: &AuctionSettings, own_type: f64) -> Self {
        Self {
            own_type,
            round: 0,
            horizon: settings.n_rounds,
            revealed_prices: Vec::new(),
            own_won: false,
            own_round1_award: Round1Award::None,
            terminal: false,
        }
    }

    /// Lowest price revealed so far.
    pub fn min_price(&self) -> Option<f64> {
        self.revealed_prices.iter().copied().reduce(f64::min)
    }

    pub fn is_last_round(&self) -> bool {
        self.round + 1 == self.horizon
    }

    /// Fixed-length encoding: `[type, one-hot(round | terminal), prices.., won, split-in-round-1]`.
    ///
    /// Unplayed price slots are zero; the round indicator disambiguates them
    /// from genuine zero prices. Terminal observations encode as all zeros
    /// apart from the terminal slot of the indicator.
    pub fn features(&self) -> Vec<f64> {
        let mut f = vec![0.0; feature_len(self.horizon)];
        self.write_features(&mut f);
        f
    }

    pub fn write_features(&self, out: &mut [f64]) {
        let h = self.horizon;
        debug_assert_eq!(out.len(), feature_len(h));
        out.fill(0.0);
        if self.terminal {
            out[1 + h] = 1.0;
            return;
        }
        out[0] = self.own_type;
        out[1 + self.round.min(h)] = 1.0;
        let prices = 2 + h;
        for (slot, &p) in out[prices..prices + h].iter_mut().zip(&self.revealed_prices) {
            *slot = p;
        }
        out[prices + h] = f64::from(u8::from(self.own_won));
        out[prices + h + 1] = f64::from(u8::from(self.own_round1_award == Round1Award::Split));
    }

    pub fn with_type(&self, own_type: f64) -> Self {
        Self {
            own_type,
            ..self.clone()
        }
    }
}

pub fn feature_len(horizon: usize) -> usize {
    2 * horizon + 4
}
