package demo;

import java.util.Map;

public class NameLookup {
    int nameLength(Map<String, String> names, String key) {
        String name = names.get(key);
        return name.length();
    }
}
