use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of attribute features appended to the logits.
pub const ATTRIBUTE_FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct Tally {
    sum: f64,
    n: usize,
}

/// Smoothed target-mean and log-count encoding of user and product ids.
///
/// For an id with ratings `r_1..r_n`:
/// `mean = (sum r + alpha * global_mean) / (n + alpha)`, `count = ln(1 + n)`.
/// Unseen ids encode as `(global_mean, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEncoder {
    pub alpha: f64,
    pub global_mean: f64,
    users: HashMap<String, Tally>,
    products: HashMap<String, Tally>,
}

/// One training row: (user id, product id, numeric rating).
pub type AttributeRow<'a> = (&'a str, &'a str, f64);

impl AttributeEncoder {
    pub fn fit(rows: &[AttributeRow<'_>], alpha: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid(
                "attribute encoder needs at least one training row",
            ));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "smoothing alpha must be > 0, got {alpha}"
            )));
        }
        let mut users: HashMap<String, Tally> = HashMap::new();
        let mut products: HashMap<String, Tally> = HashMap::new();
        let mut total = 0.0;
        for &(user, product, rating) in rows {
            if !rating.is_finite() {
                return Err(Error::invalid(format!("non-finite rating {rating}")));
            }
            total += rating;
            let u = users.entry(user.to_string()).or_default();
            u.sum += rating;
            u.n += 1;
            let p = products.entry(product.to_string()).or_default();
            p.sum += rating;
            p.n += 1;
        }
        Ok(Self {
            alpha,
            global_mean: total / rows.len() as f64,
            users,
            products,
        })
    }

    fn smoothed(&self, tally: Tally) -> [f64; 2] {
        let mean = (tally.sum + self.alpha * self.global_mean) / (tally.n as f64 + self.alpha);
        [mean, (1.0 + tally.n as f64).ln()]
    }

    pub fn user_features(&self, user: &str) -> [f64; 2] {
        self.smoothed(self.users.get(user).copied().unwrap_or_default())
    }

    pub fn product_features(&self, product: &str) -> [f64; 2] {
        self.smoothed(self.products.get(product).copied().unwrap_or_default())
    }

    /// `[user mean, user log-count, product mean, product log-count]`
    pub fn encode(&self, user: &str, product: &str) -> [f64; ATTRIBUTE_FEATURES] {
        let [um, uc] = self.user_features(user);
        let [pm, pc] = self.product_features(product);
        [um, uc, pm, pc]
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }
}
