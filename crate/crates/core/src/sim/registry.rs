use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    BlocksBowls,
    Letters,
    Feedback,
    ImageGoal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Seen,
    Unseen,
}

/// Declared generator parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskParams {
    /// Inclusive range of task objects (blocks or letters).
    pub primary: (u8, u8),
    /// Extra objects: bowls, pads, containers, distractors.
    pub support: String,
    pub pool: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub suite: Suite,
    pub split: Split,
    pub instruction_template: String,
    pub params: TaskParams,
}

fn spec(
    id: &str,
    suite: Suite,
    split: Split,
    template: &str,
    primary: (u8, u8),
    support: &str,
    pool: &str,
) -> TaskSpec {
    TaskSpec {
        task_id: id.to_string(),
        suite,
        split,
        instruction_template: template.to_string(),
        params: TaskParams { primary, support: support.to_string(), pool: pool.to_string() },
    }
}

/// Every task: 16 benchmark tasks, 4 feedback scenarios, 2 goal-image tasks.
pub fn registry() -> Vec<TaskSpec> {
    use Split::*;
    use Suite::*;
    const COLORS: &str = "palette";
    const LETTERS: &str = "A-Z";
    alloc::vec![
        spec(
            "bb_pick_place",
            BlocksBowls,
            Seen,
            "put the {color} block in the {color} bowl",
            (2, 3),
            "2-3 bowls",
            COLORS
        ),
        spec(
            "bb_matching",
            BlocksBowls,
            Seen,
            "put all the blocks in the bowls with matching colors",
            (2, 3),
            "one matching bowl per block, 0-1 extra bowl",
            COLORS
        ),
        spec("bb_stack", BlocksBowls, Seen, "stack all the blocks", (3, 4), "1-2 bowls", COLORS),
        spec(
            "bb_mismatched",
            BlocksBowls,
            Unseen,
            "put all the blocks in the bowls with mismatched colors",
            (2, 3),
            "one bowl per block color",
            COLORS
        ),
        spec("bb_one_bowl", BlocksBowls, Unseen, "put all the blocks in the {color} bowl", (2, 3), "2 bowls", COLORS),
        spec(
            "bb_warm_stack",
            BlocksBowls,
            Unseen,
            "stack all the blocks of warm colors",
            (3, 4),
            "2 warm and 1-2 cool blocks, 1 bowl",
            "warm: red orange yellow pink"
        ),
        spec(
            "bb_bowls_left_blocks_right",
            BlocksBowls,
            Unseen,
            "put all the bowls to the left of all the blocks",
            (2, 2),
            "2 bowls, 2 pads",
            COLORS
        ),
        spec(
            "bb_two_towers",
            BlocksBowls,
            Unseen,
            "make two towers of equal height with the blocks",
            (4, 4),
            "1 bowl",
            COLORS
        ),
        spec(
            "letters_alpha",
            Letters,
            Seen,
            "put the letters on the table in alphabetical order",
            (3, 5),
            "3 pads",
            LETTERS
        ),
        spec(
            "letters_spell_word",
            Letters,
            Seen,
            "spell the word {word} with the letters from left to right",
            (3, 3),
            "3 pads",
            "three-letter words"
        ),
        spec("letters_vowels_in_bowl", Letters, Seen, "put the vowels in the {color} bowl", (3, 4), "1 bowl", LETTERS),
        spec(
            "letters_reverse_alpha",
            Letters,
            Unseen,
            "put the letters on the table in reverse alphabetical order",
            (3, 4),
            "3 pads",
            LETTERS
        ),
        spec(
            "letters_vowels_left",
            Letters,
            Unseen,
            "put all the vowels to the left of all the consonants",
            (3, 4),
            "2 pads",
            LETTERS
        ),
        spec(
            "letters_spell_subset",
            Letters,
            Unseen,
            "spell the word {word} from left to right using some of the letters",
            (4, 5),
            "3 pads",
            "three-letter words plus distractors"
        ),
        spec(
            "letters_word_in_bowl",
            Letters,
            Unseen,
            "put the letters of the word {word} in the {color} bowl",
            (4, 5),
            "1 bowl",
            "three-letter words plus distractors"
        ),
        spec(
            "letters_word_position",
            Letters,
            Unseen,
            "put the first letter of {word} to the left of the other letters and its last letter to the right of them",
            (3, 3),
            "2 pads",
            "three-letter words"
        ),
        spec(
            "fb_stack_noisy",
            Feedback,
            Unseen,
            "stack all the blocks",
            (3, 3),
            "1 bowl; pick/place failure p",
            COLORS
        ),
        spec(
            "fb_pack_reversion",
            Feedback,
            Unseen,
            "pack all the chip bags into the box",
            (3, 3),
            "1 open box; one reversion",
            COLORS
        ),
        spec(
            "fb_find_hidden",
            Feedback,
            Unseen,
            "find the stapler and put it in the {color} bowl",
            (1, 1),
            "3 closed containers, 1 bowl",
            COLORS
        ),
        spec(
            "fb_handover_wait",
            Feedback,
            Unseen,
            "pick up the {color} cola and hold it until a person takes it",
            (1, 1),
            "1 bowl; external take",
            COLORS
        ),
        spec(
            "ig_bowls",
            ImageGoal,
            Unseen,
            "rearrange the blocks to match the goal image",
            (2, 3),
            "2-3 bowls",
            COLORS
        ),
        spec("ig_stack", ImageGoal, Unseen, "stack the blocks as shown in the goal image", (3, 3), "1 bowl", COLORS),
    ]
}

/// The 16 tasks of the simulated benchmark (Blocks & Bowls + Letters).
pub fn benchmark_tasks() -> Vec<TaskSpec> {
    registry().into_iter().filter(|t| matches!(t.suite, Suite::BlocksBowls | Suite::Letters)).collect()
}

pub fn task(id: &str) -> Option<TaskSpec> {
    registry().into_iter().find(|t| t.task_id == id)
}
