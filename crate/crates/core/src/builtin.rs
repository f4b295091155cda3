//! A curated pool of ready-to-use story contexts.
//!
//! Each entry follows the same shape: five named people with one-line
//! personas, a main room and an alternative room, one movable object, three
//! opaque containers that could plausibly hold it, three chat topics, and a
//! few visible and invisible update phrases written so that
//! `the <object> <phrase>` reads as a sentence. Entity names within a context
//! never overlap (no name is a word-subsequence of another), which keeps
//! canonical lines parseable and keyword grading unambiguous.

use crate::context::{ContextError, Person, StoryContext};

/// How much of a pool entry to keep when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextParams {
    pub people: usize,
    pub containers: usize,
    pub topics: usize,
}

impl Default for ContextParams {
    fn default() -> Self {
        ContextParams {
            people: 4,
            containers: 3,
            topics: 3,
        }
    }
}

/// Deterministically picks a pool entry by seed and trims it to the
/// requested cast/prop counts.
///
/// # Errors
///
/// Fails when the parameters ask for more people, containers, or topics than
/// the entry carries, or would leave the context invalid (fewer than two
/// people, containers, or topics).
pub fn sample_builtin(seed: u64, params: &ContextParams) -> Result<StoryContext, ContextError> {
    let pool = builtin_contexts();
    let mut ctx = pool[(seed % pool.len() as u64) as usize].clone();
    let mut issues = Vec::new();
    if params.people > ctx.people.len() {
        issues.push(format!(
            "people: requested {}, pool entry has {}",
            params.people,
            ctx.people.len()
        ));
    }
    if params.containers > ctx.containers.len() {
        issues.push(format!(
            "containers: requested {}, pool entry has {}",
            params.containers,
            ctx.containers.len()
        ));
    }
    if params.topics > ctx.topics.len() {
        issues.push(format!(
            "topics: requested {}, pool entry has {}",
            params.topics,
            ctx.topics.len()
        ));
    }
    if !issues.is_empty() {
        return Err(ContextError { issues });
    }
    ctx.people.truncate(params.people);
    ctx.containers.truncate(params.containers);
    ctx.topics.truncate(params.topics);
    ctx.validate()?;
    Ok(ctx)
}

#[allow(clippy::too_many_arguments)] // one positional slot per context field
fn entry(
    people: [(&str, &str); 5],
    rooms: [&str; 2],
    object: &str,
    containers: [&str; 3],
    topics: [&str; 3],
    visible: &[&str],
    invisible: &[&str],
    narration: Option<&str>,
) -> StoryContext {
    StoryContext {
        people: people
            .into_iter()
            .map(|(name, persona)| Person {
                name: name.to_string(),
                persona: persona.to_string(),
            })
            .collect(),
        rooms: rooms.into_iter().map(str::to_string).collect(),
        object: object.to_string(),
        containers: containers.into_iter().map(str::to_string).collect(),
        topics: topics.into_iter().map(str::to_string).collect(),
        visible_updates: visible.iter().map(|s| s.to_string()).collect(),
        invisible_updates: invisible.iter().map(|s| s.to_string()).collect(),
        opening_narration: narration.map(str::to_string),
    }
}

/// The full curated pool.
pub fn builtin_contexts() -> Vec<StoryContext> {
    vec![
        entry(
            [
                ("Anne", "a meticulous home cook"),
                ("Beth", "a chatty neighbor"),
                ("Charles", "a distracted novelist"),
                ("Diana", "a pragmatic gardener"),
                ("Ethan", "a teenager perpetually late for practice"),
            ],
            ["kitchen", "pantry"],
            "apple",
            ["wicker basket", "bread bin", "ceramic bowl"],
            [
                "the village fair",
                "the neighbor's new puppy",
                "the broken garden fence",
            ],
            &["is sliced into wedges", "is wrapped in foil"],
            &["is salted", "is coated with preservative"],
            Some("Late-morning light spilled across the counters as the household drifted in and out, everyone half-busy with their own errands."),
        ),
        entry(
            [
                ("David", "a cautious project lead"),
                ("Sarah", "an ambitious junior engineer"),
                ("Mark", "a skeptical auditor"),
                ("Priya", "a cheerful office manager"),
                ("Tomas", "an intern eager to impress"),
            ],
            ["office", "archive room"],
            "prototype gadget",
            ["metal filing cabinet", "wooden chest", "cardboard crate"],
            [
                "the quarterly budget",
                "the client demo",
                "the broken coffee machine",
            ],
            &["is wrapped in bubble foam", "is tagged with a red label"],
            &["is missing a screw", "is loaded with test firmware"],
            Some("The office hummed with the quiet tension of a deadline week."),
        ),
        entry(
            [
                ("Amelia", "a veteran paramedic"),
                ("Leslie", "a new volunteer"),
                ("Alexander", "a logistics coordinator"),
                ("Ruth", "a no-nonsense supervisor"),
                ("Felix", "a trainee medic"),
            ],
            ["staff room", "equipment storage room"],
            "first aid kit",
            ["plastic storage bin", "metal cabinet", "canvas duffel bag"],
            [
                "the shift schedule",
                "the ambulance inspection",
                "the retirement party",
            ],
            &["is restocked with fresh bandages", "is sealed with a zip tie"],
            &["is missing its epinephrine", "is past its inspection date"],
            None,
        ),
        entry(
            [
                ("Nora", "a patient librarian"),
                ("Hugh", "a rare-books scholar"),
                ("Ivy", "a restless archivist"),
                ("Walter", "a retired professor who visits daily"),
                ("June", "a cataloging assistant"),
            ],
            ["reading room", "archive vault"],
            "illuminated manuscript",
            ["oak cabinet", "archival folder", "document safe"],
            [
                "the upcoming exhibition",
                "the leaking skylight",
                "the donor's estate",
            ],
            &["is fitted with a protective sleeve", "is bookmarked with a silk cord"],
            &["is missing a page", "is treated with a deacidifying spray"],
            Some("Dust motes hung in the lamplight of the reading room, where the day's quiet work was about to be anything but."),
        ),
        entry(
            [
                ("Mabel", "a sourdough obsessive"),
                ("Theo", "an apprentice baker"),
                ("Greta", "the shop's longtime owner"),
                ("Louis", "a delivery driver"),
                ("Sana", "a pastry chef"),
            ],
            ["bakery front", "back kitchen"],
            "sourdough starter",
            ["stoneware crock", "proofing box", "steel canister"],
            [
                "the farmers market",
                "the new espresso blend",
                "the health inspection",
            ],
            &["is topped with rye flour", "is labeled with today's date"],
            &["is overfermented", "is mixed with a splash of honey water"],
            None,
        ),
        entry(
            [
                ("Rosa", "a careful conservator"),
                ("Miles", "a museum docent"),
                ("Helen", "the collections registrar"),
                ("Arthur", "a visiting appraiser"),
                ("Keiko", "a security officer"),
            ],
            ["gallery hall", "restoration room"],
            "bronze coin",
            ["velvet-lined tray case", "steel lockbox", "padded envelope"],
            [
                "the traveling exhibit",
                "the insurance renewal",
                "the school tour group",
            ],
            &["is polished to a warm shine", "is mounted on a display ring"],
            &["is a modern replica", "is coated in wax"],
            None,
        ),
        entry(
            [
                ("Owen", "a boatwright with salt-stained hands"),
                ("Tessa", "a weekend sailor"),
                ("Harold", "the harbormaster"),
                ("Lena", "a marine biology student"),
                ("Gil", "a fisherman who never hurries"),
            ],
            ["boathouse", "dock shed"],
            "signal flare",
            ["waterproof chest", "rope locker", "tackle box"],
            [
                "the regatta weekend",
                "the storm forecast",
                "the harbor dredging",
            ],
            &["is wrapped in oilcloth", "is marked with reflective tape"],
            &["is past its expiry date", "is loaded with a fresh igniter"],
            Some("Gulls argued over the pilings while the morning tide knocked the skiffs together."),
        ),
        entry(
            [
                ("Petra", "an exacting lab manager"),
                ("Sam", "a sleep-deprived grad student"),
                ("Victor", "a safety officer"),
                ("Alice", "a postdoc chasing a deadline"),
                ("Raj", "an instrument technician"),
            ],
            ["main lab", "cold room"],
            "sample flask",
            ["foam cooler", "specimen cabinet", "lead-lined box"],
            [
                "the grant renewal",
                "the conference abstract",
                "the broken centrifuge",
            ],
            &["is capped with a blue stopper", "is labeled biohazard"],
            &["is contaminated", "is diluted to half strength"],
            None,
        ),
        entry(
            [
                ("Clara", "a costume designer"),
                ("Ben", "a nervous understudy"),
                ("Odette", "the stage manager"),
                ("Frank", "a veteran actor"),
                ("Mira", "a props assistant"),
            ],
            ["main stage", "dressing room"],
            "gilded mask",
            ["costume trunk", "hat box", "prop cupboard"],
            [
                "the opening night",
                "the critic's early review",
                "the understudy rehearsal",
            ],
            &["is fitted with new ribbons", "is dusted with silver glitter"],
            &["is cracked along the inside", "is lined with fresh padding"],
            Some("Backstage smelled of sawdust and greasepaint, and everyone moved as if the curtain were already rising."),
        ),
        entry(
            [
                ("Elena", "a greenhouse keeper"),
                ("Marcus", "a botany lecturer"),
                ("Faye", "a florist with a sharp eye"),
                ("Dmitri", "a seed collector"),
                ("Holly", "a weekend volunteer"),
            ],
            ["greenhouse", "potting shed"],
            "orchid cutting",
            ["terracotta pot", "glass cloche jar", "seed drawer"],
            [
                "the flower show",
                "the aphid outbreak",
                "the new irrigation line",
            ],
            &["is staked to a bamboo rod", "is misted with dew"],
            &["is treated with fungicide", "is grafted onto new rootstock"],
            None,
        ),
        entry(
            [
                ("Yusuf", "a patient watchmaker"),
                ("Colette", "an estate lawyer"),
                ("Barnaby", "a collector of oddities"),
                ("Simone", "an auction-house runner"),
                ("Pavel", "an apprentice engraver"),
            ],
            ["workshop", "front parlor"],
            "pocket watch",
            ["felt pouch", "mahogany case", "tin of spare parts"],
            [
                "the estate auction",
                "the forged hallmark scandal",
                "the clockmakers' guild dinner",
            ],
            &["is fitted with a new crystal", "is engraved with initials"],
            &["is running four minutes slow", "is missing its mainspring"],
            None,
        ),
        entry(
            [
                ("Ingrid", "a meticulous pharmacist"),
                ("Carlos", "a harried clinic nurse"),
                ("Beatrice", "the front-desk coordinator"),
                ("Ahmed", "a visiting physician"),
                ("Polly", "a pharmacy technician"),
            ],
            ["dispensary", "consultation room"],
            "vaccine vial",
            ["insulated carrier", "locked drawer", "supply tote"],
            [
                "the flu season rush",
                "the clinic audit",
                "the new appointment system",
            ],
            &["is sealed with a tamper band", "is flagged with an orange sticker"],
            &["is past its cold-chain window", "is drawn down to a single dose"],
            None,
        ),
        entry(
            [
                ("Astrid", "a telescope operator"),
                ("Neil", "a data-hungry astronomer"),
                ("Wanda", "the night-shift engineer"),
                ("Ferdinand", "a visiting cosmologist"),
                ("Lucia", "an outreach coordinator"),
            ],
            ["observation deck", "control room"],
            "calibration lens",
            ["foam-lined crate", "instrument locker", "canvas satchel"],
            [
                "the meteor shower",
                "the mirror recoating",
                "the open-house night",
            ],
            &["is fitted with a dust cap", "is mounted in a brass collar"],
            &["is scratched near the edge", "is coated for infrared work"],
            Some("The dome groaned open to a sky so clear it felt intentional."),
        ),
        entry(
            [
                ("Imogen", "a vinyl purist"),
                ("Dexter", "the shop's laconic owner"),
                ("Ramona", "a touring DJ"),
                ("Stanley", "a nostalgic regular"),
                ("Kiki", "a part-time clerk"),
            ],
            ["record shop floor", "back office"],
            "test pressing",
            ["crate of sleeves", "locked display drawer", "shipping mailer"],
            [
                "the listening party",
                "the reissue rumor",
                "the busted turntable",
            ],
            &["is slipped into a white sleeve", "is stickered with a price tag"],
            &["is warped from heat", "is autographed inside the gatefold"],
            None,
        ),
        entry(
            [
                ("Henrietta", "a tailor with exact standards"),
                ("Basil", "a flamboyant client"),
                ("Opal", "a seamstress"),
                ("Gideon", "a fabric wholesaler"),
                ("Suki", "an alterations apprentice"),
            ],
            ["fitting room", "sewing workshop"],
            "silk ribbon",
            ["notions drawer", "button tin", "garment bag"],
            [
                "the wedding order",
                "the fabric shortage",
                "the mannequin mishap",
            ],
            &["is pressed flat", "is pinned to a swatch card"],
            &["is dyed a shade darker", "is cut short by a hand's width"],
            None,
        ),
        entry(
            [
                ("Jonas", "a toymaker who hums while he works"),
                ("Edith", "the shop bookkeeper"),
                ("Casper", "a curious delivery boy"),
                ("Violet", "a window-display artist"),
                ("Rufus", "a retired clockmaker who lingers"),
            ],
            ["toy shop", "repair nook"],
            "wind-up robot",
            ["gift box", "parts bin", "display pedestal drawer"],
            [
                "the holiday rush",
                "the window contest",
                "the squeaky floorboard",
            ],
            &["is painted fire-engine red", "is tied with a bow"],
            &["is wound too tight", "is fitted with a new spring"],
            Some("Bells over the door had barely stopped ringing all morning."),
        ),
        entry(
            [
                ("Margot", "a hotel concierge"),
                ("Stefan", "a bellhop with aching feet"),
                ("Agnes", "the head housekeeper"),
                ("Leopold", "a long-staying guest"),
                ("Noor", "the night auditor"),
            ],
            ["lobby", "luggage room"],
            "brass key",
            ["key cabinet", "lost-and-found bin", "front-desk drawer"],
            [
                "the ballroom renovation",
                "the mystery guest",
                "the staff holiday rota",
            ],
            &["is tagged with a room number", "is shined with a cloth"],
            &["is a duplicate copy", "is bent at the tip"],
            None,
        ),
        entry(
            [
                ("Olive", "a cafe owner"),
                ("Percy", "a barista and amateur poet"),
                ("Tamsin", "a pastry supplier"),
                ("Gordon", "a health inspector off duty"),
                ("Ines", "a regular with a corner seat"),
            ],
            ["cafe counter area", "storeroom"],
            "coffee tin",
            ["burlap sack", "pantry cupboard", "delivery crate"],
            [
                "the latte art contest",
                "the rent increase",
                "the missing chalkboard",
            ],
            &["is stamped with a roast date", "is topped with a cork lid"],
            &["is filled with decaf", "is down to its last scoop"],
            None,
        ),
        entry(
            [
                ("Piotr", "a groundskeeper"),
                ("Maeve", "a fencing coach"),
                ("Desmond", "the club treasurer"),
                ("Yolanda", "a championship hopeful"),
                ("Bram", "an equipment fitter"),
            ],
            ["training hall", "club office"],
            "trophy cup",
            ["glass-front cabinet base", "storage trunk", "velvet pouch"],
            [
                "the regional finals",
                "the membership drive",
                "the leaky roof fund",
            ],
            &["is filled with celebration confetti", "is wrapped for transport"],
            &["is engraved with the wrong year", "is a replacement casting"],
            None,
        ),
        entry(
            [
                ("Saoirse", "a field archaeologist"),
                ("Emmett", "a site surveyor"),
                ("Lydia", "a finds registrar"),
                ("Kwame", "a conservation specialist"),
                ("Tilda", "a graduate volunteer"),
            ],
            ["finds tent", "survey trailer"],
            "clay tablet",
            ["padded find tray", "sealed evidence bag", "wooden specimen box"],
            [
                "the funding visit",
                "the river flooding",
                "the museum handover",
            ],
            &["is brushed clean of soil", "is numbered in white ink"],
            &["is a later-period forgery", "is consolidated with resin"],
            Some("The tent flaps snapped in the wind while the day's finds waited, patient as they had been for three thousand years."),
        ),
        entry(
            [
                ("Bruno", "a cheesemonger"),
                ("Celeste", "a street-market inspector"),
                ("Hamish", "a dairy farmer"),
                ("Renata", "a food writer"),
                ("Jasper", "a stall assistant"),
            ],
            ["market stall", "cold cellar"],
            "wheel of cheese",
            ["waxed paper wrap bin", "aging crate", "zinc-lined chest"],
            [
                "the tasting festival",
                "the new customs rules",
                "the rival stall's prices",
            ],
            &["is coated in black wax", "is stenciled with the farm's mark"],
            &["is aged past its peak", "is swapped for a cheaper batch"],
            None,
        ),
        entry(
            [
                ("Freya", "a glassblower"),
                ("Anton", "a gallery buyer"),
                ("Matilda", "a kiln technician"),
                ("Ezra", "a shipping packer"),
                ("Coral", "a studio apprentice"),
            ],
            ["hot shop", "cooling room"],
            "glass vase",
            ["straw-packed barrel", "foam shipping carton", "annealing cart tray"],
            [
                "the gallery commission",
                "the gas bill",
                "the apprentice showcase",
            ],
            &["is etched with a wave pattern", "is fitted with a walnut base"],
            &["is hairline-cracked at the lip", "is the second of a pair"],
            None,
        ),
    ]
}
