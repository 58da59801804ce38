//! Schottky groups, Stallings folding, multiarcs, grafting bookkeeping and
//! numeric branched-cover checks on the Riemann sphere.

pub mod brancov;
pub mod fixtures;
pub mod foldgraph;
pub mod graftcalc;
pub mod moebius;
pub mod multiarc;
pub mod planarity;
pub mod schottky;
pub mod word;
