//! Neutral haystack text for the synthetic generators.
//!
//! Sentences contain no digits and none of the words used by needles, so a
//! planted fact is the only place its answer can be found.

pub const FILLER: &[&str] = &[
    "The river bends slowly around the old mill before it widens into the valley.",
    "Most gardeners agree that patience matters more than any particular tool.",
    "In late autumn the market square fills with the smell of roasted chestnuts.",
    "A good library rewards the reader who wanders without a fixed plan.",
    "The lighthouse keeper wrote long letters that were rarely answered.",
    "Weather in the hills can change within minutes, so walkers carry extra layers.",
    "Bread dough needs warmth and time more than it needs careful measurement.",
    "The committee met again to discuss the color of the new benches.",
    "Some birds travel thousands of miles without ever seeing a map.",
    "An old clock in the hallway chimes a little after every quarter hour.",
    "The bakery on the corner opens before sunrise on most weekdays.",
    "Travelers often remember the kindness of strangers longer than the scenery.",
    "A quiet afternoon with a book can feel longer than a busy week.",
    "The orchard produced more apples this year than anyone expected.",
    "Fog settled over the harbor and the ferries waited for it to lift.",
    "Children in the village learn to swim in the shallow part of the lake.",
    "The museum rotates its paintings so that visitors always find something new.",
    "Rain on a tin roof makes a sound that many people find calming.",
    "The path through the forest is marked with small painted stones.",
    "Every spring the meadow turns yellow with wildflowers for a few weeks.",
    "Good soup depends on letting the flavors rest together for a while.",
    "The choir practices in the old chapel because of its gentle echo.",
    "Snow fell quietly through the night and covered the empty streets.",
    "A carpenter measures twice because wood is less forgiving than clay.",
    "The tea house serves its guests in cups that do not match.",
    "Mountain lakes stay cold even in the warmest part of summer.",
    "Our neighbor keeps bees and shares honey with the whole street.",
    "The train slowed as it crossed the long bridge over the gorge.",
    "People who keep journals often discover patterns in their own habits.",
    "The farmer repaired the fence before the sheep noticed the gap.",
    "Lanterns along the canal are lit one by one as evening arrives.",
    "A well tuned piano can fill a small room with surprising warmth.",
    "The old map showed roads that had long since disappeared.",
    "Cats in the harbor town seem to know exactly when the boats return.",
    "Wind carried the scent of pine down from the ridge.",
    "The potter shapes each bowl by hand and no two are alike.",
    "Students gathered on the steps of the hall to enjoy the sunshine.",
    "The recipe was handed down through several generations of the family.",
    "Waves rolled onto the beach in a steady and patient rhythm.",
    "A small garden can provide herbs for an entire season of cooking.",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filler_has_no_digits_or_needle_words() {
        for s in FILLER {
            assert!(!s.chars().any(|c| c.is_ascii_digit()), "{s}");
            let lower = s.to_lowercase();
            for w in ["secret", "code", "var ", "penguin", "counted", "star"] {
                assert!(!lower.contains(w), "{s} contains {w}");
            }
            assert!(s.ends_with('.'));
        }
    }
}
