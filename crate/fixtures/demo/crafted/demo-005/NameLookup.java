package demo;

import java.util.Map;

public class NameLookup {
    int nameLength(Map<String, String> names, String key) {
        String name = names.get(key);
        if (name != null) {
            return name.length();
        }
        return 0;
    }
}
