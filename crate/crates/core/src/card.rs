//! Cards, sets, packs and collections.
//!
//! Card identity is a dense index into the owning [`CardSet`]; names are only
//! metadata. Every model in the crate (the Bayes `Q` matrix, network outputs)
//! is a vector or matrix over `0..set.len()`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense card index within a [`CardSet`].
pub type CardId = usize;

/// Number of colors in the mana system (W, U, B, R, G).
pub const NUM_COLORS: usize = 5;

/// Color letters in canonical WUBRG order.
pub const COLOR_LETTERS: [char; NUM_COLORS] = ['W', 'U', 'B', 'R', 'G'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rarity {
    Basic,
    Common,
    Uncommon,
    Rare,
    Mythic,
}

impl Rarity {
    pub const ALL: [Rarity; 5] = [
        Rarity::Basic,
        Rarity::Common,
        Rarity::Uncommon,
        Rarity::Rare,
        Rarity::Mythic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rarity::Basic => "basic",
            Rarity::Common => "common",
            Rarity::Uncommon => "uncommon",
            Rarity::Rare => "rare",
            Rarity::Mythic => "mythic",
        }
    }
}

impl fmt::Display for Rarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Rarity::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rarity '{s}'"))
    }
}

/// Required mana symbols of each color, in WUBRG order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColorVector(pub [u8; NUM_COLORS]);

impl ColorVector {
    pub const COLORLESS: ColorVector = ColorVector([0; NUM_COLORS]);

    pub fn new(w: u8, u: u8, b: u8, r: u8, g: u8) -> Self {
        ColorVector([w, u, b, r, g])
    }

    pub fn get(&self, color: usize) -> u8 {
        self.0[color]
    }

    pub fn has(&self, color: usize) -> bool {
        self.0[color] > 0
    }

    /// Number of distinct colors with a nonzero requirement.
    pub fn num_colors(&self) -> usize {
        self.0.iter().filter(|&&c| c > 0).count()
    }

    pub fn is_colorless(&self) -> bool {
        self.num_colors() == 0
    }

    /// Indices of the colors this vector requires.
    pub fn colors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_COLORS).filter(move |&i| self.0[i] > 0)
    }

    /// Total colored symbols.
    pub fn symbols(&self) -> u32 {
        self.0.iter().map(|&c| c as u32).sum()
    }

    /// Short color class used by plots: `C`, a single WUBRG letter, or `M`.
    pub fn class(&self) -> String {
        match self.num_colors() {
            0 => "C".to_string(),
            1 => {
                let i = self.colors().next().unwrap();
                COLOR_LETTERS[i].to_string()
            }
            _ => "M".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub index: CardId,
    pub name: String,
    pub rarity: Rarity,
    pub colors: ColorVector,
    pub strength: f64,
}

impl Card {
    pub fn colors(&self) -> ColorVector {
        self.colors
    }
}

/// Free function form of [`Card::colors`].
pub fn card_colors(card: &Card) -> ColorVector {
    card.colors
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CardSet {
    pub code: String,
    cards: Vec<Card>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    code: String,
    cards: Vec<CardRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CardRecord {
    name: String,
    rarity: String,
    colors: Vec<i64>,
    strength: f64,
}

/// Expected rarity breakdown of a set, used to sanity-check set files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetProfile {
    pub size: usize,
    pub mythic: usize,
    pub rare: usize,
    pub uncommon: usize,
    pub common: usize,
    pub basic: usize,
}

/// Core Set 2019 composition.
pub const M19_PROFILE: SetProfile = SetProfile {
    size: 265,
    mythic: 16,
    rare: 53,
    uncommon: 80,
    common: 111,
    basic: 5,
};

const DESK_JSON: &str = include_str!("../data/desk.json");

impl CardSet {
    /// Builds a set from already-constructed cards, validating them.
    pub fn new(code: impl Into<String>, cards: Vec<Card>) -> Result<Self> {
        let code = code.into();
        if cards.is_empty() {
            return Err(Error::Schema {
                record: code,
                message: "card list is empty".into(),
            });
        }
        let mut names = HashSet::new();
        for (i, card) in cards.iter().enumerate() {
            let record = format!("card {i} ({})", card.name);
            if card.index != i {
                return Err(Error::Schema {
                    record,
                    message: format!("index {} does not match position", card.index),
                });
            }
            if !(0.0..=5.0).contains(&card.strength) || card.strength.is_nan() {
                return Err(Error::Schema {
                    record,
                    message: format!("strength {} outside [0, 5]", card.strength),
                });
            }
            if !names.insert(card.name.as_str()) {
                return Err(Error::Schema {
                    record,
                    message: "duplicate card name".into(),
                });
            }
        }
        Ok(CardSet { code, cards })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SetFile = serde_json::from_str(text).map_err(|e| Error::Schema {
            record: "set file".into(),
            message: e.to_string(),
        })?;
        let mut cards = Vec::with_capacity(file.cards.len());
        for (index, rec) in file.cards.into_iter().enumerate() {
            let record = format!("card {index} ({})", rec.name);
            let rarity = rec.rarity.parse::<Rarity>().map_err(|message| Error::Schema {
                record: record.clone(),
                message,
            })?;
            if rec.colors.len() != NUM_COLORS {
                return Err(Error::Schema {
                    record,
                    message: format!("colors must have {NUM_COLORS} components"),
                });
            }
            let mut colors = [0u8; NUM_COLORS];
            for (slot, &c) in colors.iter_mut().zip(&rec.colors) {
                if c < 0 {
                    return Err(Error::Schema {
                        record,
                        message: format!("negative color component {c}"),
                    });
                }
                *slot = u8::try_from(c).map_err(|_| Error::Schema {
                    record: record.clone(),
                    message: format!("color component {c} too large"),
                })?;
            }
            cards.push(Card {
                index,
                name: rec.name,
                rarity,
                colors: ColorVector(colors),
                strength: rec.strength,
            });
        }
        CardSet::new(file.code, cards)
    }

    /// Serializes back to the set-file schema.
    pub fn to_json_string(&self) -> String {
        let cards: Vec<serde_json::Value> = self
            .cards
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "rarity": c.rarity.as_str(),
                    "colors": c.colors.0,
                    "strength": c.strength,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "code": self.code, "cards": cards }))
            .expect("set serialization")
    }

    /// The bundled 40-card synthetic set used by tests and demos.
    pub fn desk() -> Self {
        CardSet::from_json_str(DESK_JSON).expect("bundled DESK set is valid")
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }

    pub fn cards(&self) -> &[Card] {
        &self.cards
    }

    pub fn card(&self, id: CardId) -> &Card {
        &self.cards[id]
    }

    pub fn get(&self, id: CardId) -> Option<&Card> {
        self.cards.get(id)
    }

    pub fn find(&self, name: &str) -> Option<&Card> {
        self.cards.iter().find(|c| c.name == name)
    }

    pub fn ids_of_rarity(&self, rarity: Rarity) -> Vec<CardId> {
        self.cards
            .iter()
            .filter(|c| c.rarity == rarity)
            .map(|c| c.index)
            .collect()
    }

    pub fn rarity_count(&self, rarity: Rarity) -> usize {
        self.cards.iter().filter(|c| c.rarity == rarity).count()
    }

    pub fn profile(&self) -> SetProfile {
        SetProfile {
            size: self.len(),
            mythic: self.rarity_count(Rarity::Mythic),
            rare: self.rarity_count(Rarity::Rare),
            uncommon: self.rarity_count(Rarity::Uncommon),
            common: self.rarity_count(Rarity::Common),
            basic: self.rarity_count(Rarity::Basic),
        }
    }

    pub fn check_profile(&self, expected: &SetProfile) -> Result<()> {
        let actual = self.profile();
        if &actual != expected {
            return Err(Error::Schema {
                record: self.code.clone(),
                message: format!("rarity profile {actual:?} does not match {expected:?}"),
            });
        }
        Ok(())
    }
}

pub fn load_set(path: impl AsRef<Path>) -> Result<CardSet> {
    let text = fs::read_to_string(path.as_ref())?;
    CardSet::from_json_str(&text)
}

/// Cards currently in a booster. A multiset of card indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pack(pub Vec<CardId>);

impl Pack {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: CardId) -> bool {
        self.0.contains(&id)
    }

    pub fn cards(&self) -> &[CardId] {
        &self.0
    }

    /// Removes one copy of `id`, returning whether it was present.
    pub fn take(&mut self, id: CardId) -> bool {
        match self.0.iter().position(|&c| c == id) {
            Some(pos) => {
                self.0.remove(pos);
                true
            }
            None => false,
        }
    }
}

/// Count vector over a set: `counts[j]` copies of card `j` picked so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Collection(Vec<u32>);

impl Collection {
    pub fn empty(set_size: usize) -> Self {
        Collection(vec![0; set_size])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Collection(counts)
    }

    pub fn set_size(&self) -> usize {
        self.0.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn count(&self, id: CardId) -> u32 {
        self.0[id]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Adds one copy of `id`.
    pub fn add(&mut self, id: CardId) -> Result<()> {
        let size = self.0.len();
        let slot = self
            .0
            .get_mut(id)
            .ok_or_else(|| Error::Invalid(format!("card index {id} out of range for set of {size}")))?;
        *slot += 1;
        Ok(())
    }

    /// Nonzero entries as `(card, count)`.
    pub fn iter(&self) -> impl Iterator<Item = (CardId, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
    }

    pub fn as_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&c| c as f32).collect()
    }
}

/// Value-returning form of [`Collection::add`].
pub fn collection_add(mut collection: Collection, card: CardId) -> Result<Collection> {
    collection.add(card)?;
    Ok(collection)
}
