use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rng::{self, Stream};
use crate::{Error, Result};

/// Attempts before giving up on a design with an empty subset.
pub const MAX_DESIGN_ATTEMPTS: u64 = 100;

/// `M` candidate training subsets over `N` records, each record belonging to
/// exactly `M/2` of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetDesign {
    num_records: usize,
    num_subsets: usize,
    /// Per record: the subsets it belongs to, ascending.
    memberships: Vec<Vec<usize>>,
    /// Per subset: its records, ascending.
    members: Vec<Vec<usize>>,
}

impl SubsetDesign {
    /// Builds a design from explicit per-record memberships, checking the
    /// balance and non-emptiness invariants.
    pub fn from_memberships(num_subsets: usize, memberships: Vec<Vec<usize>>) -> Result<Self> {
        check_shape(memberships.len(), num_subsets)?;
        let half = num_subsets / 2;
        let mut members = vec![Vec::new(); num_subsets];
        let mut memberships = memberships;
        for (i, row) in memberships.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if row.len() != half {
                return Err(Error::Domain(format!(
                    "record {i} belongs to {} subsets, expected {half}",
                    row.len()
                )));
            }
            for &m in row.iter() {
                if m >= num_subsets {
                    return Err(Error::Domain(format!("record {i} names subset {m} of {num_subsets}")));
                }
                members[m].push(i);
            }
        }
        if let Some(m) = members.iter().position(Vec::is_empty) {
            return Err(Error::Domain(format!("subset {m} is empty")));
        }
        Ok(Self { num_records: memberships.len(), num_subsets, memberships, members })
    }

    pub fn num_records(&self) -> usize {
        self.num_records
    }

    pub fn num_subsets(&self) -> usize {
        self.num_subsets
    }

    /// Records of subset `m`, ascending.
    pub fn members(&self, m: usize) -> &[usize] {
        &self.members[m]
    }

    /// Subsets containing record `i`, ascending.
    pub fn memberships(&self, i: usize) -> &[usize] {
        &self.memberships[i]
    }

    pub fn contains(&self, m: usize, i: usize) -> bool {
        self.memberships[i].binary_search(&m).is_ok()
    }

    pub fn subset_sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// SHA-256 over the shape and the membership lists, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.num_records as u64).to_le_bytes());
        hasher.update((self.num_subsets as u64).to_le_bytes());
        for row in &self.memberships {
            for &m in row {
                hasher.update((m as u32).to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn check_shape(num_records: usize, num_subsets: usize) -> Result<()> {
    if num_subsets < 2 || num_subsets % 2 != 0 {
        return Err(Error::Domain(format!("number of subsets must be even and at least 2, got {num_subsets}")));
    }
    if num_records == 0 {
        return Err(Error::Domain("the universe must hold at least one record".into()));
    }
    Ok(())
}

/// Gives every record an independent uniformly random set of `M/2` subsets.
///
/// A draw that leaves some subset empty is discarded and redrawn from the next
/// sub-seed, up to [`MAX_DESIGN_ATTEMPTS`] times.
pub fn build_balanced_design(num_records: usize, num_subsets: usize, seed: u64) -> Result<SubsetDesign> {
    check_shape(num_records, num_subsets)?;
    for attempt in 0..MAX_DESIGN_ATTEMPTS {
        let mut rng = rng::keyed(seed, Stream::Design, 1, attempt);
        let memberships: Vec<Vec<usize>> = (0..num_records)
            .map(|_| index::sample(&mut rng, num_subsets, num_subsets / 2).into_vec())
            .collect();
        match SubsetDesign::from_memberships(num_subsets, memberships) {
            Ok(design) => return Ok(design),
            Err(Error::Domain(msg)) if msg.ends_with("is empty") => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Domain(format!(
        "no design with {num_records} records and {num_subsets} nonempty subsets after {MAX_DESIGN_ATTEMPTS} attempts"
    )))
}

/// The secret index `j* ~ Unif[M]` that goes with a design seed.
pub fn sample_secret(num_subsets: usize, seed: u64) -> usize {
    use rand::Rng;
    rng::keyed(seed, Stream::Design, 2, 0).random_range(0..num_subsets)
}
